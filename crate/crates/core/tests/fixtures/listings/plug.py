from skills import Grasp, Push_towards, Insert
Grasp('right', 'plug', 100) # force range from [0, 100]
Move_to('right', 'box', 20) # rotate plug in-hand
Insert('right', 'power_strip', 100)
